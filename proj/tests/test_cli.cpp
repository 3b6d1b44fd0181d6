#include <doctest.h>

#include <cstdlib>
#include <string>

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MODREC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cli exit codes: help is 0, usage errors are 2") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("gen --help") == 0);
    CHECK(run_cli("--definitely-not-a-flag") == 2);
    CHECK(run_cli("train") == 2);                       // missing required options
    CHECK(run_cli("train --arch cnn2 --out /tmp/x") == 2);  // missing --data
    CHECK(run_cli("gen --out /tmp/x --bogus") == 2);
    CHECK(run_cli("") == 2);  // subcommand required
}

TEST_CASE("cli runtime failures exit 1 with a diagnostic") {
    CHECK(run_cli("train --data /nonexistent.bin --arch cnn2 --out /tmp/m.bin") == 1);
    CHECK(run_cli("eval --model /nonexistent.bin --data /nonexistent.bin --out /tmp/d") == 1);
    CHECK(run_cli("gen --out /tmp/x.bin --profile bogus") == 1);
}
