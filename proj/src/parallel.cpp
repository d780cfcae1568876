#include "qet/parallel.hpp"

namespace qet {

namespace {
std::atomic<std::size_t> g_workers{1};
}

std::size_t worker_count() noexcept { return g_workers.load(); }

void set_worker_count(std::size_t n) noexcept { g_workers.store(n == 0 ? 1 : n); }

}  // namespace qet
