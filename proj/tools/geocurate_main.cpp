#include "geocurate/cli.hpp"

int main(int argc, char** argv) { return geocurate::cli::run(argc, argv); }
