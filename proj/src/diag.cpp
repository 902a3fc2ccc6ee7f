#include "xaiopt/diag.hpp"

#include <iostream>
#include <mutex>

namespace xaiopt {
namespace {

std::mutex& handler_mutex() {
    static std::mutex m;
    return m;
}

WarningHandler& current_handler() {
    static WarningHandler handler = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}

} // namespace

void warn(std::string_view message) {
    std::lock_guard lock(handler_mutex());
    if (current_handler()) {
        current_handler()(message);
    }
}

WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(handler_mutex());
    auto previous = std::move(current_handler());
    current_handler() = std::move(handler);
    return previous;
}

struct WarningCapture::State {
    std::vector<std::string> messages;
};

WarningCapture::WarningCapture() : state_(new State) {
    // Called under handler_mutex() by warn(), so no extra locking here.
    previous_ = set_warning_handler(
        [s = state_](std::string_view msg) { s->messages.emplace_back(msg); });
}

WarningCapture::~WarningCapture() {
    set_warning_handler(std::move(previous_));
    delete state_;
}

std::vector<std::string> WarningCapture::messages() const {
    std::lock_guard lock(handler_mutex());
    return state_->messages;
}

bool WarningCapture::contains(std::string_view fragment) const {
    for (const auto& m : messages()) {
        if (m.find(fragment) != std::string::npos) {
            return true;
        }
    }
    return false;
}

} // namespace xaiopt
