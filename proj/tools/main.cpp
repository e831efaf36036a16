#include "quantlearn/cli.hpp"

int main(int argc, char** argv) { return quantlearn::cli_main(argc, argv); }
