#include "pmols/cli.hpp"

int main(int argc, char** argv) { return pmols::cli::run(argc, argv); }
