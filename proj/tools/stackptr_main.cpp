#include "stackptr/cli.hpp"

int main(int argc, char** argv) { return stackptr::cli::run(argc, argv); }
