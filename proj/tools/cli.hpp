#pragma once

namespace cbp {

/// The cbplab entry point, callable from tests. Exit codes: 0 success,
/// 1 runtime failure, 2 bad command line or config.
int cli_main(int argc, const char* const* argv);

}  // namespace cbp
