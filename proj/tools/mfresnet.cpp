#include "meanfield/commands.hpp"

int main(int argc, char** argv) { return meanfield::run_cli(argc, argv); }
