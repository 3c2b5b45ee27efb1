#include "cli.hpp"

int main(int argc, char** argv) { return headsplat::cli::run(argc, argv); }
