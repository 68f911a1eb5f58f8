#include "arst/cli.hpp"

int main(int argc, char** argv) { return arst::cli::main(argc, argv); }
