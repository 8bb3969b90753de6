/* Scores a truecased line against its reference through the C API. */
#include <stdio.h>

#include "tcner.h"

int main(void) {
    TcnerScore score;
    TcnerStatus st = tcner_char_f1("we met Alan\nin Paris", "we met Alan\nin paris", &score);
    if (st != TCNER_STATUS_OK) {
        fprintf(stderr, "error %d: %s\n", (int)st, tcner_last_error());
        return 1;
    }
    printf("tp=%llu fp=%llu fn=%llu\n", (unsigned long long)score.tp, (unsigned long long)score.fp,
           (unsigned long long)score.fn_);

    TcnerTruecaser *tc = NULL;
    st = tcner_truecaser_load("/nonexistent/model.bin", &tc);
    printf("load=%d null=%d\n", (int)st, tc == NULL);
    return 0;
}
