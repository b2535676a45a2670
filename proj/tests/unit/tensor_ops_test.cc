#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "metaadapt/tensor/ops.h"
#include "test_util.h"

namespace metaadapt {
namespace {

Tensor Make(Shape shape, std::vector<double> values) { return Tensor(std::move(shape), std::move(values)); }

TEST(TensorTest, DataLengthMustMatchShape) {
  EXPECT_ERROR_KIND(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ErrorKind::kDimension);
  Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
}

TEST(TensorOpsTest, ReluClampsNegatives) {
  Tape tape;
  Var y = ops::Relu(tape.Constant(Make({3}, {1, -1, 0})));
  EXPECT_EQ(y.value().storage(), (std::vector<double>{1, 0, 0}));
}

TEST(TensorOpsTest, SoftmaxOfEqualLogitsIsUniform) {
  Tape tape;
  Var y = ops::Softmax(tape.Constant(Make({2}, {0, 0})));
  EXPECT_DOUBLE_EQ(y.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(y.value()[1], 0.5);
}

TEST(TensorOpsTest, SoftmaxRowsSumToOne) {
  Tape tape;
  Var y = ops::Softmax(tape.Constant(Make({2, 3}, {1, 2, 3, -5, 0, 700})));
  for (std::size_t r = 0; r < 2; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) total += y.value().at(r, c);
    EXPECT_NEAR(total, 1.0, 1e-15);
  }
}

TEST(TensorOpsTest, MatMulHandArithmetic) {
  Tape tape;
  Var y = ops::MatMul(tape.Constant(Make({2, 2}, {1, 2, 3, 4})), tape.Constant(Make({2, 1}, {1, 1})));
  EXPECT_EQ(y.shape(), (Shape{2, 1}));
  EXPECT_EQ(y.value().storage(), (std::vector<double>{3, 7}));
}

TEST(TensorOpsTest, MatMulNTMatchesExplicitTranspose) {
  Tape tape;
  Var a = tape.Constant(Make({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var b = tape.Constant(Make({2, 3}, {1, 0, -1, 2, 1, 0}));
  Var bt = tape.Constant(Make({3, 2}, {1, 2, 0, 1, -1, 0}));
  EXPECT_EQ(ops::MatMulNT(a, b).value(), ops::MatMul(a, bt).value());
}

TEST(TensorOpsTest, MatMulRejectsInnerMismatch) {
  Tape tape;
  EXPECT_ERROR_KIND(ops::MatMul(tape.Constant(Tensor({2, 3})), tape.Constant(Tensor({2, 2}))),
                    ErrorKind::kDimension);
}

TEST(TensorOpsTest, AddRejectsShapeMismatch) {
  Tape tape;
  EXPECT_ERROR_KIND(ops::Add(tape.Constant(Tensor({3})), tape.Constant(Tensor({2}))),
                    ErrorKind::kDimension);
}

TEST(TensorOpsTest, NonFiniteOutputIsNumericError) {
  Tape tape;
  Var x = tape.Constant(Make({2}, {1e308, 1.0}));
  EXPECT_ERROR_KIND(ops::Scale(x, 10.0), ErrorKind::kNumeric);
}

TEST(TensorOpsTest, LayerNormOfTwoValues) {
  Tape tape;
  Var y = ops::LayerNorm(tape.Constant(Make({2}, {1, -1})), tape.Constant(Make({2}, {1, 1})),
                         tape.Constant(Make({2}, {0, 0})), 1e-5);
  // mean 0, variance 1 -> x / sqrt(1 + 1e-5)
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y.value()[0], expected, 1e-15);
  EXPECT_NEAR(y.value()[1], -expected, 1e-15);
  EXPECT_NEAR(y.value()[0], 0.99999, 1e-5);
}

TEST(TensorOpsTest, LayerNormOfConstantRowIsZero) {
  Tape tape;
  for (double c : {-3.0, 0.0, 7.25}) {
    Var y = ops::LayerNorm(tape.Constant(Make({3}, {c, c, c})), tape.Constant(Make({3}, {1, 1, 1})),
                           tape.Constant(Make({3}, {0, 0, 0})), 1e-5);
    for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(TensorOpsTest, LayerNormRowMeanEqualsBias) {
  Tape tape;
  Rng rng(3);
  Tensor x({4, 5});
  for (double& v : x.data()) v = rng.Normal(0, 2);
  const double bias = 0.75;
  Var y = ops::LayerNorm(tape.Constant(x), tape.Constant(Tensor({5}, 1.0)),
                         tape.Constant(Tensor({5}, bias)), 1e-5);
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < 5; ++c) mean += y.value().at(r, c);
    EXPECT_NEAR(mean / 5.0, bias, 1e-12);
  }
}

TEST(TensorOpsTest, LayerNormRejectsEmptyAxis) {
  Tape tape;
  EXPECT_ERROR_KIND(ops::LayerNorm(tape.Constant(Tensor({2, 0})), tape.Constant(Tensor({0})),
                                   tape.Constant(Tensor({0})), 1e-5),
                    ErrorKind::kDimension);
}

TEST(TensorOpsTest, EmbeddingSelectsRows) {
  Tape tape;
  Var table = tape.Constant(Make({3, 2}, {0, 1, 10, 11, 20, 21}));
  std::vector<int> ids = {2, 0, 2};
  EXPECT_EQ(ops::Embedding(table, ids).value().storage(), (std::vector<double>{20, 21, 0, 1, 20, 21}));
  std::vector<int> bad = {3};
  EXPECT_ERROR_KIND(ops::Embedding(table, bad), ErrorKind::kDimension);
}

TEST(TensorOpsTest, CrossEntropyOfUniformLogitsIsLogV) {
  Tape tape;
  const std::size_t vocab = 7;
  std::vector<int> targets = {3, 0, -1};
  Var loss = ops::CrossEntropy(tape.Constant(Tensor({3, vocab}, 0.25)), targets, -1);
  EXPECT_NEAR(loss.value().item(), std::log(static_cast<double>(vocab)), 1e-14);
}

TEST(TensorOpsTest, CrossEntropyAllIgnoredIsInputError) {
  Tape tape;
  std::vector<int> targets = {0, 0};
  EXPECT_ERROR_KIND(ops::CrossEntropy(tape.Constant(Tensor({2, 4})), targets, 0), ErrorKind::kInput);
}

TEST(TensorOpsTest, DropoutZeroProbabilityIsIdentity) {
  Tape tape;
  Rng rng(1);
  Var x = tape.Constant(Make({3}, {1, 2, 3}));
  Var y = ops::Dropout(x, 0.0, rng);
  EXPECT_EQ(y.index(), x.index());
}

TEST(TensorOpsTest, DropoutKeepsExpectation) {
  Tape tape;
  Rng rng(5);
  Var y = ops::Dropout(tape.Constant(Tensor({20000}, 1.0)), 0.1, rng);
  double total = 0.0;
  std::size_t zeros = 0;
  for (double v : y.value().data()) {
    total += v;
    zeros += v == 0.0;
  }
  EXPECT_NEAR(total / 20000.0, 1.0, 0.02);
  EXPECT_NEAR(static_cast<double>(zeros) / 20000.0, 0.1, 0.01);
}

TEST(TensorOpsTest, AttentionIgnoresPaddedKeys) {
  // One query row attending over two keys; the second is padding, so the
  // output must equal the first value row exactly.
  Tape tape;
  Var q = tape.Constant(Make({1, 2}, {0.3, -0.2}));
  Var k = tape.Constant(Make({2, 2}, {0.1, 0.4, 5.0, 5.0}));
  Var v = tape.Constant(Make({2, 2}, {1.5, -2.5, 100.0, 100.0}));
  std::vector<std::uint8_t> valid = {1, 0};
  Var out = ops::Attention(q, k, v, {.batch = 1, .query_len = 1, .key_len = 2, .heads = 1}, valid, false);
  EXPECT_EQ(out.value().storage(), (std::vector<double>{1.5, -2.5}));
}

TEST(TensorOpsTest, CausalAttentionFirstPositionSeesOnlyItself) {
  Tape tape;
  Var q = tape.Constant(Make({2, 2}, {1, 0, 0, 1}));
  Var v = tape.Constant(Make({2, 2}, {3, 4, 5, 6}));
  std::vector<std::uint8_t> valid = {1, 1};
  Var out = ops::Attention(q, q, v, {.batch = 1, .query_len = 2, .key_len = 2, .heads = 2}, valid, true);
  EXPECT_EQ(out.value()[0], 3.0);
  EXPECT_EQ(out.value()[1], 4.0);
}

}  // namespace
}  // namespace metaadapt
