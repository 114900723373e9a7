#include "dgrain/log.hpp"

#include <atomic>
#include <chrono>
#include <iostream>
#include <mutex>

#include "json.hpp"

namespace dgrain::log {
namespace {

std::atomic<int> g_level{static_cast<int>(Level::warn)};
std::atomic<bool> g_json{false};
std::mutex g_mutex;

const char* name(Level l) {
    switch (l) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
    }
    return "?";
}

}  // namespace

void set_level(Level level) { g_level = static_cast<int>(level); }
void set_json(bool json) { g_json = json; }
Level level() { return static_cast<Level>(g_level.load()); }

void write(Level l, const std::string& msg) {
    if (static_cast<int>(l) < g_level.load()) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    if (g_json) {
        auto t = std::chrono::duration<double>(
                     std::chrono::system_clock::now().time_since_epoch())
                     .count();
        nlohmann::json j = {{"t", t}, {"level", name(l)}, {"msg", msg}};
        std::cerr << j.dump() << '\n';
    } else {
        std::cerr << '[' << name(l) << "] " << msg << '\n';
    }
}

}  // namespace dgrain::log
