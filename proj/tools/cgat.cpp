#include "cgat/commands.hpp"

int main(int argc, char** argv) { return cgat::run_cli(argc, argv); }
