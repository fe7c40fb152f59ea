#include "hcm/cli.hpp"

int main(int argc, char** argv) { return hcm::cli::run(argc, argv); }
