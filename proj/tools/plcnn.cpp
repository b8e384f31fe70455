#include "plcnn/cli/commands.hpp"

int main(int argc, char** argv) { return plcnn::cli::run(argc, argv); }
