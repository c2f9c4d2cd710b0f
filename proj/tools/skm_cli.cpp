#include "cli_app.hpp"

int main(int argc, char** argv) { return skm::cli::run(argc, argv); }
