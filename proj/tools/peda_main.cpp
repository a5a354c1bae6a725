#include "peda/cli.hpp"

int main(int argc, char** argv) { return peda::cli::dispatch(argc, argv); }
