#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace xaiopt {

using WarningHandler = std::function<void(std::string_view)>;

// Emits a warning through the installed handler (stderr by default).
// Safe to call from worker threads.
void warn(std::string_view message);

WarningHandler set_warning_handler(WarningHandler handler);

// Collects warnings for the lifetime of the object, restoring the previous
// handler on destruction.
class WarningCapture {
public:
    WarningCapture();
    ~WarningCapture();
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    std::vector<std::string> messages() const;
    bool contains(std::string_view fragment) const;

private:
    WarningHandler previous_;
    struct State;
    State* state_;
};

} // namespace xaiopt
