#include "glanet/cli.hpp"

int main(int argc, char** argv) { return gla::cli::run(argc, argv); }
