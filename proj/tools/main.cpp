#include "cli.hpp"

int main(int argc, char** argv) { return s2h::cli::run(argc, argv); }
