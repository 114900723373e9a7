#pragma once

#include <string>

namespace dgrain::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

void set_level(Level level);
void set_json(bool json);
Level level();

void write(Level level, const std::string& msg);

inline void debug(const std::string& m) { write(Level::debug, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void warn(const std::string& m) { write(Level::warn, m); }
inline void error(const std::string& m) { write(Level::error, m); }

}  // namespace dgrain::log
