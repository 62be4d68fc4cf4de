#include "gsmp/exponents.hpp"

#include <string>

#include "gsmp/errors.hpp"

namespace gsmp {

namespace {
void require(bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("exponents: ") + what);
}
}  // namespace

void ExponentParams::validate() const {
    require(dim_n == 2 || dim_n == 3, "dim_n must be 2 or 3");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    require(delta >= 0.0 && delta < 1.0, "delta must lie in [0,1)");
    require(alpha + delta > 0.5 && alpha + delta < 1.0, "alpha+delta must lie in (1/2,1)");
    require(delta + 2.0 * alpha >= dim_n / 4.0 + 0.5, "delta+2*alpha must be >= n/4+1/2");
    require(beta >= 0.0 && beta <= alpha, "beta must lie in [0,alpha]");
    require(alpha - beta < 0.5, "alpha-beta must be < 1/2");
    require(gamma >= 0.0 && gamma <= alpha, "gamma must lie in [0,alpha]");
    if (backward_mode) {
        require(alpha < 0.5, "backward mode needs alpha < 1/2");
        require(delta < 0.5, "backward mode needs delta < 1/2");
        require(gamma + delta < 0.5, "backward mode needs gamma+delta < 1/2");
    }
}

bool ExponentParams::valid() const noexcept {
    try {
        validate();
        return true;
    } catch (const ValidationError&) {
        return false;
    }
}

}  // namespace gsmp
