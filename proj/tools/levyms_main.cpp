#include "levyms/cli.hpp"

int main(int argc, char** argv) { return levyms::run_cli(argc, argv); }
