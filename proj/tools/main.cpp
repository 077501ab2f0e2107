#include "cli.hpp"

int main(int argc, char** argv) { return cbp::cli_main(argc, argv); }
