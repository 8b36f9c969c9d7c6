#include <sphcard/cli.hpp>

int main(int argc, char** argv) { return sphcard::cli::run(argc, argv); }
