#include "qengine/log.hpp"

#include <iostream>
#include <mutex>
#include <string>

namespace qengine::log {
namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

Sink& current_sink() {
    static Sink sink = [](Level level, std::string_view message) {
        if (level == Level::Warning) std::cerr << "qengine: warning: " << message << '\n';
    };
    return sink;
}

void emit(Level level, std::string_view message) {
    std::lock_guard lock(sink_mutex());
    if (auto& sink = current_sink()) sink(level, message);
}

}  // namespace

void set_sink(Sink sink) {
    std::lock_guard lock(sink_mutex());
    current_sink() = std::move(sink);
}

void debug(std::string_view message) { emit(Level::Debug, message); }
void warn(std::string_view message) { emit(Level::Warning, message); }

}  // namespace qengine::log
