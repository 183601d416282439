#include "ppg2abp/cli/cli.hpp"

int main(int argc, char** argv) { return ppg2abp::cli::run(argc, argv); }
