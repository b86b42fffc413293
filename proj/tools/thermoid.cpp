#include "thermoid/cli.hpp"

int main(int argc, char** argv) { return thermoid::cli::run(argc, argv); }
