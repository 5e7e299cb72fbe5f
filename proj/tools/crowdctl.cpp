#include "cli_app.hpp"

int main(int argc, char** argv) { return crowdctl::cli::run(argc, argv); }
