#include "semiflow/cli.hpp"

int main(int argc, char** argv) { return semiflow::cli_main(argc, argv); }
