#include "std_testcase.h"

#ifndef OMITBAD

void CWE121_Stack_Based_Buffer_Overflow__demo_b_01_bad()
{
    int buffer[4] = {0};
    buffer[4] = 1;
}

#endif /* OMITBAD */

#ifndef OMITGOOD

static void good1()
{
    int buffer[4] = {0};
    buffer[3] = 1;
}

void CWE121_Stack_Based_Buffer_Overflow__demo_b_01_good()
{
    good1();
}

#endif /* OMITGOOD */
