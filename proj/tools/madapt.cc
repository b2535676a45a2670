#include <string>
#include <vector>

#include "metaadapt/cli/cli.h"

int main(int argc, char** argv) { return metaadapt::RunCli(std::vector<std::string>(argv, argv + argc)); }
