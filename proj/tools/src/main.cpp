#include "homeofit_cli/cli.hpp"

int main(int argc, char** argv) { return homeofit::cli::run(argc, argv); }
