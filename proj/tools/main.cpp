#include "qjump/cli.hpp"

int main(int argc, char** argv) { return qjump::cli::run(argc, argv); }
