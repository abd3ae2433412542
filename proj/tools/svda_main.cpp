#include "svda/cli.hpp"

int main(int argc, char** argv) { return svda::cli::run(argc, argv); }
