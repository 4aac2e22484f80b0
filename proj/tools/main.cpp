#include "recipeforge/cli.hpp"

int main(int argc, char** argv) { return recipeforge::cli::run(argc, argv); }
