#include <math.h>
#include <stdio.h>

#include "qprobe.h"

int main(void) {
    QpInterrogation *h = NULL;
    if (qp_interrogation_new(-1.0, 0.05, 1.0, 1.0, 10.0, &h) != QP_STATUS_OK) {
        char msg[256];
        qp_last_error_message(msg, sizeof msg);
        fprintf(stderr, "qp_interrogation_new: %s\n", msg);
        return 1;
    }
    double qfi = 0.0;
    QpStatus s = qp_qfi(h, QP_PARAMETER_GAMMA, QP_ROUTE_SLD_SPECTRAL, &qfi);
    qp_interrogation_free(h);
    if (s != QP_STATUS_OK || fabs(qfi - 126.03) > 0.01) {
        fprintf(stderr, "status %d, qfi %f\n", (int)s, qfi);
        return 1;
    }
    printf("%.6f\n", qfi);
    return 0;
}
