#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "qengine/log.hpp"

int main(int argc, char** argv) {
    // Corrections are logged as warnings; tests assert on values instead.
    qengine::log::set_sink({});
    doctest::Context context(argc, argv);
    return context.run();
}
