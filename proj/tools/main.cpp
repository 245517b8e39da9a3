#include "cropnet/cli.hpp"

int main(int argc, char** argv) { return cropnet::cli::run(argc, argv); }
