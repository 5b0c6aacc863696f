#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "convdiss.h"

static int check(ConvdissStatus s, const char *what) {
    if (s != CONVDISS_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, convdiss_last_error());
        return 1;
    }
    return 0;
}

int main(void) {
    const char *doc = "model = \"ks\"\np = 1\nlambda = 4\nf = \"abs_power\"\nq = 2\namplitude = 20\nn_cells = 64\n";
    ConvdissConfig *cfg = NULL;
    ConvdissRun *run = NULL;
    if (check(convdiss_config_parse(doc, &cfg), "parse")) return 1;
    if (check(convdiss_run(cfg, &run), "run")) return 1;
    ConvdissRegime regime;
    if (check(convdiss_run_regime(run, &regime), "regime")) return 1;
    double td = 0.0, te = 0.0;
    if (check(convdiss_run_blowup_time(run, &td, &te), "blowup_time")) return 1;
    size_t n = 0;
    if (check(convdiss_run_sample_count(run, &n), "count")) return 1;
    double *sup = malloc(n * sizeof *sup);
    if (check(convdiss_run_column(run, "Linf", sup, n), "column")) return 1;
    printf("regime=%d t_detect=%g samples=%zu last_sup=%g version=%s\n", (int)regime, td, n, sup[n - 1],
           convdiss_version());
    int ok = regime == CONVDISS_REGIME_BLOW_UP && td > 0.0 && sup[n - 1] > 20.0;
    free(sup);
    convdiss_run_free(run);
    convdiss_config_free(cfg);
    return ok ? 0 : 2;
}
