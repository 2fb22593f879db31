#include <math.h>
#include <stdio.h>
#include "difflab.h"

int main(void) {
    DlField *f = NULL;
    if (dl_field_from_json("{\"type\":\"constant\",\"value\":1.0}", &f) != DL_STATUS_OK) return 10;
    double x = 0.5, v = 0.0;
    if (dl_log_q(f, 0.01, &x, &x, 1, &v) != DL_STATUS_OK) return 11;
    if (fabs(v - 1.0370730) > 1e-6) return 12;
    DlRates r;
    if (dl_ratecalc(1, 0.6, 7.0, 1e4, &r) != DL_STATUS_OK) return 13;
    if (r.alpha_d != 4 || fabs(r.s_star - 7.0) > 1e-9) return 14;
    if (dl_ratecalc(1, 0.4, 7.0, 1e4, &r) != DL_STATUS_INVALID_ARGUMENT) return 15;
    if (dl_last_error() == NULL) return 16;
    if (dl_field_value(NULL, &x, 1, &v) != DL_STATUS_NULL_POINTER) return 17;
    dl_field_free(f);
    printf("ok %s\n", dl_version());
    return 0;
}
