#include "selfprompt/pipeline.hpp"

int main(int argc, char** argv) {
    return selfprompt::cli::run_command(argc, argv);
}
