#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace tgraph::testing {

struct ProcessResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Runs a shell command line, capturing stdout and stderr.
inline ProcessResult run_command(const std::string& command_line) {
    static int counter = 0;
    auto base = std::filesystem::temp_directory_path() /
                ("tg_proc_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    auto out = base.string() + ".out";
    auto err = base.string() + ".err";
    int status = std::system((command_line + " >" + out + " 2>" + err).c_str());
    ProcessResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    std::filesystem::remove(out);
    std::filesystem::remove(err);
    return r;
}

inline std::string quoted(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

} // namespace tgraph::testing
