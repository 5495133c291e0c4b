#include <stdio.h>
#include <string.h>
#include "partypes.h"

int main(void) {
    PtProtocol *p = NULL;
    if (pt_protocol_parse("protocol P (size >= 2) { message 0, size - 1 float }", &p) != PT_STATUS_OK) {
        fprintf(stderr, "%s\n", pt_last_error());
        return 1;
    }
    char *json = NULL;
    if (pt_project(p, 3, &json) != PT_STATUS_OK) {
        fprintf(stderr, "%s\n", pt_last_error());
        return 1;
    }
    int found = strstr(json, "\"peer\":2") != NULL;
    pt_string_free(json);
    if (pt_project(p, 1, &json) != PT_STATUS_PRECONDITION) {
        return 1;
    }
    pt_protocol_free(p);
    return found ? 0 : 1;
}
