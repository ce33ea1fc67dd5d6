#include "echo/cli.hpp"

int main(int argc, char** argv) { return echo::cli_main(std::vector<std::string>(argv + 1, argv + argc)); }
