#include <stdio.h>
#include <string.h>
#include "hiersim.h"

int main(int argc, char **argv) {
    HsScenario *sc = NULL;
    if (hs_scenario_bundled("s3_house_der", &sc) != HS_STATUS_OK) {
        fprintf(stderr, "bundled: %s\n", hs_last_error());
        return 1;
    }
    HsSim *sim = NULL;
    if (hs_sim_new(sc, &sim) != HS_STATUS_OK) return 2;
    hs_scenario_free(sc);
    uint64_t n = 0;
    while (hs_sim_step(sim) == HS_STATUS_OK) n++;
    if (n != 96 || hs_sim_timestep(sim) != 96) return 3;
    double t = 0;
    if (hs_sim_get(sim, "c1.thermal.h1.zone.t_zone.state", &t) != HS_STATUS_OK) return 4;
    if (hs_sim_get(sim, "nope", &t) != HS_STATUS_NOT_FOUND || !strstr(hs_last_error(), "nope")) return 5;
    hs_sim_free(sim);
    printf("%s %.3f\n", hs_version(), t);
    return 0;
}
