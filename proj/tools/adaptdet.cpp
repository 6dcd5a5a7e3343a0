#include "adaptdet/cli.hpp"

int main(int argc, char** argv) { return adaptdet::cli::main(argc, argv); }
