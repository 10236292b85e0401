#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <spdlog/spdlog.h>

namespace {
// Keep expected warnings out of the test log.
const bool quiet = [] {
  spdlog::set_level(spdlog::level::err);
  return true;
}();
}  // namespace
