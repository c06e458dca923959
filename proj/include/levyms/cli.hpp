#ifndef LEVYMS_CLI_HPP
#define LEVYMS_CLI_HPP

namespace levyms {

/// Entry point of the `levyms` command. Returns 0 on success, 2 for
/// configuration errors, 3 for numerical failures, 4 when a refinement
/// schedule exceeds its budget and 1 for anything else (IO). Failures are
/// reported on stderr as a single JSON object.
int run_cli(int argc, char** argv);

}  // namespace levyms

#endif  // LEVYMS_CLI_HPP
