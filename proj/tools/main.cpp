#include "cli.hpp"

int main(int argc, char** argv) { return advlogo::cli::run(argc, argv); }
