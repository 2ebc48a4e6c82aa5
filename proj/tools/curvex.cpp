#include "curvex/cli.hpp"

int main(int argc, char** argv) { return curvex::cli_main(argc, argv); }
