#include "dfr/cli.hpp"

int main(int argc, char** argv) { return dfr::cli::run_cli(argc, argv); }
