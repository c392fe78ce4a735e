#include <math.h>
#include <stdio.h>
#include <string.h>

#include "eqlab.h"

#define CHECK(expr)                                                              \
    do {                                                                         \
        EqlabStatus s_ = (expr);                                                 \
        if (s_ != EQLAB_STATUS_OK) {                                             \
            fprintf(stderr, "%s -> %d: %s\n", #expr, (int)s_, eqlab_last_error()); \
            return 1;                                                            \
        }                                                                        \
    } while (0)

int main(void) {
    EqlabEconomy *economy = NULL;
    EqlabEquilibrium *eq = NULL;
    CHECK(eqlab_scenario_generate("identical", 0, 6, 0.9, 3, &economy));
    CHECK(eqlab_solve(economy, 0.0, 1, 0, &eq));

    size_t n = eqlab_economy_horizon(economy);
    double prices[6];
    CHECK(eqlab_equilibrium_prices(eq, prices, n));
    double beta_n = 1.0;
    for (size_t k = 0; k < n; k++) {
        beta_n *= 0.9;
        if (fabs(prices[k] - beta_n) > 1e-10) {
            fprintf(stderr, "p_%zu = %g, expected %g\n", k + 1, prices[k], beta_n);
            return 1;
        }
    }

    double jac[36];
    CHECK(eqlab_jacobian(economy, eq, jac, 36));
    if (eqlab_jacobian(economy, eq, jac, 3) != EQLAB_STATUS_BUFFER_TOO_SMALL) return 1;

    char *json = NULL;
    CHECK(eqlab_stability_json(economy, eq, &json));
    if (strstr(json, "\"negative_definite\":true") == NULL) return 1;
    eqlab_string_free(json);

    EqlabEconomy *bad = NULL;
    if (eqlab_economy_from_json("{\"beta\": 2}", &bad) != EQLAB_STATUS_VALIDATION) return 1;
    if (eqlab_last_error() == NULL) return 1;

    eqlab_equilibrium_free(eq);
    eqlab_economy_free(economy);
    printf("ok %s\n", eqlab_version());
    return 0;
}
