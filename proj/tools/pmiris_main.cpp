#include "pmiris/cli.hpp"

int main(int argc, char** argv) { return pmiris::cli::run(argc, argv); }
