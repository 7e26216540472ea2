#include "adamct/cli.hpp"

int main(int argc, char** argv) { return adamct::cli::run(argc, argv); }
