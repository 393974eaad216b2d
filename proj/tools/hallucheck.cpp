#include "hallucheck/cli.hpp"

int main(int argc, char** argv) { return hallucheck::cli::main(argc, argv); }
