#include "scagwr/cli.hpp"

int main(int argc, char** argv) { return scagwr::cli::run(argc, argv); }
