#include "qenc/cli.hpp"

int main(int argc, char** argv) { return qenc::cli::run(argc, argv); }
