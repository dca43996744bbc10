#include "lcbf/commands.hpp"

int main(int argc, char** argv) { return lcbf::run_cli(argc, argv); }
