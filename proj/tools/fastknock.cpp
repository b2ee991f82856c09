#include "cli/commands.hpp"

int main(int argc, char** argv) { return fastknock::cli::run(argc, argv); }
