#include "fitb/cli.hpp"

int main(int argc, char** argv) { return fitb::cli::run(argc, argv); }
