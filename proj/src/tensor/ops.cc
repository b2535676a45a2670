#include "metaadapt/tensor/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "metaadapt/core/error.h"

namespace metaadapt::ops {
namespace {

using Grad = std::span<const double>;

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  Require(a.shape() == b.shape(), ErrorKind::kDimension,
          std::string(op) + ": shape mismatch " + ShapeToString(a.shape()) + " vs " +
              ShapeToString(b.shape()));
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMatrix>;
using ConstMap = Eigen::Map<const RowMatrix>;

ConstMap ConstView(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Map View(Tensor& t, std::size_t rows, std::size_t cols) {
  return Map(t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Map GradView(std::span<double> g, std::size_t rows, std::size_t cols) {
  return Map(g.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Shape WithLastDim(const Shape& shape, std::size_t last) {
  Shape out = shape.empty() ? Shape{1} : shape;
  out.back() = last;
  return out;
}

}  // namespace

Var Add(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  RequireSameShape(x, y, "add");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return a.tape()->Record(std::move(out), {a, b}, [a, b](Tape& t, Grad g, const Tensor&) {
    for (Var in : {a, b}) {
      if (!in.requires_grad()) continue;
      auto dst = t.GradFor(in);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
  });
}

Var Mul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  RequireSameShape(x, y, "mul");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return a.tape()->Record(std::move(out), {a, b}, [a, b](Tape& t, Grad g, const Tensor&) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (a.requires_grad()) {
      auto dst = t.GradFor(a);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * y[i];
    }
    if (b.requires_grad()) {
      auto dst = t.GradFor(b);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * x[i];
    }
  });
}

Var Scale(Var a, double factor) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return a.tape()->Record(std::move(out), {a}, [a, factor](Tape& t, Grad g, const Tensor&) {
    auto dst = t.GradFor(a);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * factor;
  });
}

Var AddBias(Var x, Var bias) {
  const Tensor& in = x.value();
  const Tensor& b = bias.value();
  const std::size_t cols = in.cols();
  Require(b.size() == cols, ErrorKind::kDimension,
          "add_bias: bias of shape " + ShapeToString(b.shape()) + " for input " +
              ShapeToString(in.shape()));
  Tensor out(in.shape());
  const std::size_t rows = in.rows();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = in[r * cols + c] + b[c];
  return x.tape()->Record(std::move(out), {x, bias},
                          [x, bias, rows, cols](Tape& t, Grad g, const Tensor&) {
                            if (x.requires_grad()) {
                              auto dst = t.GradFor(x);
                              for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                            }
                            if (bias.requires_grad()) {
                              auto dst = t.GradFor(bias);
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < cols; ++c) dst[c] += g[r * cols + c];
                            }
                          });
}

Var MatMul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  Require(w.rank() == 2, ErrorKind::kDimension, "matmul: right operand must be rank 2");
  const std::size_t n = x.rows();
  const std::size_t k = x.cols();
  const std::size_t m = w.dim(1);
  if (w.dim(0) != k) {
    Fail(ErrorKind::kDimension, "matmul: inner dimensions differ, " + ShapeToString(x.shape()) + " x " +
                                    ShapeToString(w.shape()));
  }
  Tensor out(WithLastDim(x.shape(), m));
  View(out, n, m).noalias() = ConstView(x, n, k) * ConstView(w, k, m);
  return a.tape()->Record(std::move(out), {a, b}, [a, b, n, k, m](Tape& t, Grad g, const Tensor&) {
    const ConstMap gm(g.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    if (a.requires_grad()) GradView(t.GradFor(a), n, k).noalias() += gm * ConstView(b.value(), k, m).transpose();
    if (b.requires_grad()) GradView(t.GradFor(b), k, m).noalias() += ConstView(a.value(), n, k).transpose() * gm;
  });
}

Var MatMulNT(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  Require(w.rank() == 2, ErrorKind::kDimension, "matmul_nt: right operand must be rank 2");
  const std::size_t n = x.rows();
  const std::size_t k = x.cols();
  const std::size_t m = w.dim(0);
  if (w.dim(1) != k) {
    Fail(ErrorKind::kDimension, "matmul_nt: inner dimensions differ, " + ShapeToString(x.shape()) + " x " +
                                    ShapeToString(w.shape()) + "^T");
  }
  Tensor out(WithLastDim(x.shape(), m));
  View(out, n, m).noalias() = ConstView(x, n, k) * ConstView(w, m, k).transpose();
  return a.tape()->Record(std::move(out), {a, b}, [a, b, n, k, m](Tape& t, Grad g, const Tensor&) {
    const ConstMap gm(g.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    if (a.requires_grad()) GradView(t.GradFor(a), n, k).noalias() += gm * ConstView(b.value(), m, k);
    if (b.requires_grad()) GradView(t.GradFor(b), m, k).noalias() += gm.transpose() * ConstView(a.value(), n, k);
  });
}

Var Relu(Var x) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  return x.tape()->Record(std::move(out), {x}, [x](Tape& t, Grad g, const Tensor& out) {
    auto dst = t.GradFor(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (out[i] > 0.0) dst[i] += g[i];
  });
}

Var Softmax(Var x) {
  const Tensor& in = x.value();
  const std::size_t cols = in.cols();
  Require(!in.shape().empty() && cols >= 1, ErrorKind::kDimension, "softmax over an empty axis");
  const std::size_t rows = in.rows();
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data().data() + r * cols;
    double* orow = out.data().data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += orow[c] = std::exp(row[c] - mx);
    for (std::size_t c = 0; c < cols; ++c) orow[c] /= total;
  }
  return x.tape()->Record(std::move(out), {x}, [x, rows, cols](Tape& t, Grad g, const Tensor& y) {
    auto dst = t.GradFor(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c)
        dst[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
    }
  });
}

Var Sum(Var x) {
  const Tensor& in = x.value();
  double total = 0.0;
  for (double v : in.data()) total += v;
  return x.tape()->Record(Tensor::Scalar(total), {x}, [x](Tape& t, Grad g, const Tensor&) {
    auto dst = t.GradFor(x);
    for (double& d : dst) d += g[0];
  });
}

Var Embedding(Var table, std::span<const int> ids) {
  const Tensor& w = table.value();
  Require(w.rank() == 2, ErrorKind::kDimension, "embedding: table must be rank 2");
  const std::size_t vocab = w.dim(0);
  const std::size_t dim = w.dim(1);
  Tensor out(Shape{ids.size(), dim});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < vocab, ErrorKind::kDimension,
            "embedding: id " + std::to_string(ids[i]) + " outside vocabulary of " +
                std::to_string(vocab));
    std::copy_n(w.data().data() + static_cast<std::size_t>(ids[i]) * dim, dim,
                out.data().data() + i * dim);
  }
  auto kept = std::make_shared<std::vector<int>>(ids.begin(), ids.end());
  return table.tape()->Record(std::move(out), {table}, [table, kept, dim](Tape& t, Grad g, const Tensor&) {
    auto dst = t.GradFor(table);
    for (std::size_t i = 0; i < kept->size(); ++i) {
      double* row = dst.data() + static_cast<std::size_t>((*kept)[i]) * dim;
      for (std::size_t c = 0; c < dim; ++c) row[c] += g[i * dim + c];
    }
  });
}

Var CrossEntropy(Var logits, std::span<const int> targets, int ignore_index) {
  const Tensor& z = logits.value();
  const std::size_t rows = z.rows();
  const std::size_t cols = z.cols();
  Require(targets.size() == rows, ErrorKind::kDimension,
          "cross_entropy: " + std::to_string(targets.size()) + " targets for " +
              std::to_string(rows) + " rows");
  auto probs = std::make_shared<std::vector<double>>(rows * cols);
  std::size_t counted = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_index) continue;
    Require(targets[r] >= 0 && static_cast<std::size_t>(targets[r]) < cols, ErrorKind::kDimension,
            "cross_entropy: target id out of range");
    const double* row = z.data().data() + r * cols;
    double* prow = probs->data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sum += prow[c] = std::exp(row[c] - mx);
    for (std::size_t c = 0; c < cols; ++c) prow[c] /= sum;
    total += -(row[targets[r]] - mx - std::log(sum));
    ++counted;
  }
  Require(counted > 0, ErrorKind::kInput, "cross_entropy: no non-padding target positions");
  auto kept = std::make_shared<std::vector<int>>(targets.begin(), targets.end());
  const double inv = 1.0 / static_cast<double>(counted);
  return logits.tape()->Record(
      Tensor::Scalar(total * inv), {logits},
      [logits, probs, kept, rows, cols, inv, ignore_index](Tape& t, Grad g, const Tensor&) {
        auto dst = t.GradFor(logits);
        const double scale = g[0] * inv;
        for (std::size_t r = 0; r < rows; ++r) {
          const int target = (*kept)[r];
          if (target == ignore_index) continue;
          const double* prow = probs->data() + r * cols;
          double* drow = dst.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) drow[c] += scale * prow[c];
          drow[target] -= scale;
        }
      });
}

Var Dropout(Var x, double p, Rng& rng) {
  Require(p >= 0.0 && p < 1.0, ErrorKind::kConfig, "dropout probability must be in [0, 1)");
  if (p == 0.0) return x;
  const Tensor& in = x.value();
  auto mask = std::make_shared<std::vector<double>>(in.size());
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    (*mask)[i] = rng.Uniform() < p ? 0.0 : keep_scale;
    out[i] = in[i] * (*mask)[i];
  }
  return x.tape()->Record(std::move(out), {x}, [x, mask](Tape& t, Grad g, const Tensor&) {
    auto dst = t.GradFor(x);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * (*mask)[i];
  });
}

Var LayerNorm(Var x, Var gain, Var bias, double epsilon) {
  Require(epsilon > 0.0, ErrorKind::kConfig, "layer_norm: epsilon must be positive");
  const Tensor& in = x.value();
  const std::size_t cols = in.shape().empty() ? 0 : in.cols();
  Require(cols >= 1, ErrorKind::kDimension, "layer_norm: normalized axis has length < 1");
  Require(gain.value().size() == cols && bias.value().size() == cols, ErrorKind::kDimension,
          "layer_norm: gain/bias length differs from last axis " + std::to_string(cols));
  const std::size_t rows = in.rows();
  auto xhat = std::make_shared<std::vector<double>>(in.size());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data().data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += row[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + epsilon);
    (*rstd)[r] = inv;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (row[c] - mean) * inv;
      (*xhat)[r * cols + c] = h;
      out[r * cols + c] = h * gv[c] + bv[c];
    }
  }
  return x.tape()->Record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat, rstd, rows, cols](Tape& t, Grad g, const Tensor&) {
        const Tensor& gv = gain.value();
        if (gain.requires_grad()) {
          auto dg = t.GradFor(gain);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) dg[c] += g[r * cols + c] * (*xhat)[r * cols + c];
        }
        if (bias.requires_grad()) {
          auto db = t.GradFor(bias);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) db[c] += g[r * cols + c];
        }
        if (x.requires_grad()) {
          auto dx = t.GradFor(x);
          const double n = static_cast<double>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_d = 0.0;
            double mean_dh = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = g[r * cols + c] * gv[c];
              mean_d += d;
              mean_dh += d * (*xhat)[r * cols + c];
            }
            mean_d /= n;
            mean_dh /= n;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = g[r * cols + c] * gv[c];
              dx[r * cols + c] += (*rstd)[r] * (d - mean_d - (*xhat)[r * cols + c] * mean_dh);
            }
          }
        }
      });
}

Var Attention(Var q, Var k, Var v, const AttentionShape& shape,
              std::span<const std::uint8_t> key_valid, bool causal) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  const std::size_t B = shape.batch;
  const std::size_t Tq = shape.query_len;
  const std::size_t Tk = shape.key_len;
  const std::size_t H = shape.heads;
  const std::size_t D = qv.cols();
  Require(H >= 1 && D % H == 0, ErrorKind::kDimension, "attention: width not divisible by heads");
  Require(qv.rows() == B * Tq && kv.rows() == B * Tk && vv.rows() == B * Tk &&
              kv.cols() == D && vv.cols() == D,
          ErrorKind::kDimension, "attention: q/k/v shapes disagree with batch layout");
  Require(key_valid.size() == B * Tk, ErrorKind::kDimension, "attention: key mask length");
  const std::size_t dh = D / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  auto probs = std::make_shared<std::vector<double>>(B * H * Tq * Tk, 0.0);
  Tensor out(Shape{B * Tq, D});
  const double* qp = qv.data().data();
  const double* kp = kv.data().data();
  const double* vp = vv.data().data();
  double* op = out.data().data();
  std::vector<double> scores(Tk);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < Tq; ++i) {
        const double* qrow = qp + (b * Tq + i) * D + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < Tk; ++j) {
          const bool visible = key_valid[b * Tk + j] != 0 && (!causal || j <= i);
          if (!visible) {
            scores[j] = -std::numeric_limits<double>::infinity();
            continue;
          }
          const double* krow = kp + (b * Tk + j) * D + h * dh;
          double s = 0.0;
          for (std::size_t d = 0; d < dh; ++d) s += qrow[d] * krow[d];
          scores[j] = s * scale;
          mx = std::max(mx, scores[j]);
        }
        double* prow = probs->data() + ((b * H + h) * Tq + i) * Tk;
        if (mx == -std::numeric_limits<double>::infinity()) continue;  // nothing visible
        double total = 0.0;
        for (std::size_t j = 0; j < Tk; ++j) {
          prow[j] = scores[j] == -std::numeric_limits<double>::infinity()
                        ? 0.0
                        : std::exp(scores[j] - mx);
          total += prow[j];
        }
        double* orow = op + (b * Tq + i) * D + h * dh;
        for (std::size_t j = 0; j < Tk; ++j) {
          prow[j] /= total;
          if (prow[j] == 0.0) continue;
          const double* vrow = vp + (b * Tk + j) * D + h * dh;
          for (std::size_t d = 0; d < dh; ++d) orow[d] += prow[j] * vrow[d];
        }
      }
    }
  }

  return q.tape()->Record(
      std::move(out), {q, k, v},
      [q, k, v, probs, B, Tq, Tk, H, D, dh, scale](Tape& t, Grad g, const Tensor&) {
        const double* qp = q.value().data().data();
        const double* kp = k.value().data().data();
        const double* vp = v.value().data().data();
        double* dq = q.requires_grad() ? t.GradFor(q).data() : nullptr;
        double* dk = k.requires_grad() ? t.GradFor(k).data() : nullptr;
        double* dv = v.requires_grad() ? t.GradFor(v).data() : nullptr;
        std::vector<double> dp(Tk);
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t i = 0; i < Tq; ++i) {
              const double* prow = probs->data() + ((b * H + h) * Tq + i) * Tk;
              const double* grow = g.data() + (b * Tq + i) * D + h * dh;
              double dot = 0.0;
              for (std::size_t j = 0; j < Tk; ++j) {
                if (prow[j] == 0.0) {
                  dp[j] = 0.0;
                  continue;
                }
                const double* vrow = vp + (b * Tk + j) * D + h * dh;
                double s = 0.0;
                for (std::size_t d = 0; d < dh; ++d) s += grow[d] * vrow[d];
                dp[j] = s;
                dot += prow[j] * s;
                if (dv) {
                  double* dvrow = dv + (b * Tk + j) * D + h * dh;
                  for (std::size_t d = 0; d < dh; ++d) dvrow[d] += prow[j] * grow[d];
                }
              }
              const double* qrow = qp + (b * Tq + i) * D + h * dh;
              double* dqrow = dq ? dq + (b * Tq + i) * D + h * dh : nullptr;
              for (std::size_t j = 0; j < Tk; ++j) {
                if (prow[j] == 0.0) continue;
                const double ds = prow[j] * (dp[j] - dot) * scale;
                const double* krow = kp + (b * Tk + j) * D + h * dh;
                if (dqrow)
                  for (std::size_t d = 0; d < dh; ++d) dqrow[d] += ds * krow[d];
                if (dk) {
                  double* dkrow = dk + (b * Tk + j) * D + h * dh;
                  for (std::size_t d = 0; d < dh; ++d) dkrow[d] += ds * qrow[d];
                }
              }
            }
          }
        }
      });
}

}  // namespace metaadapt::ops
