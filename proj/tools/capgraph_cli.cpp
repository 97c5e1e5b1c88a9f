/**
 * @file capgraph_cli.cpp
 * @brief Command-line entry point; see capgraph/cli.hpp.
 */
#include <string>
#include <vector>

#include "capgraph/cli.hpp"

int main(int argc, char** argv) {
    return capgraph::run_command(std::vector<std::string>(argv, argv + argc));
}
