#include "skillworld/cli.hpp"

int main(int argc, char** argv) { return skillworld::cli::run(argc, argv); }
