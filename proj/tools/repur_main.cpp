#include "repur/commands.hpp"

int main(int argc, char** argv) { return repur::run_cli(argc, argv); }
