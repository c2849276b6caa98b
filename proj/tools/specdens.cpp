#include "specdens/cli.hpp"

int main(int argc, char** argv) { return specdens::cli::run(argc, argv); }
