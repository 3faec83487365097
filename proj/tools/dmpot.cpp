#include "dmpot/cli.hpp"

int main(int argc, char** argv) { return dmpot::run_cli(argc, argv); }
