/* TEMPLATE GENERATED TESTCASE FILE
Filename: CWE121_Stack_Based_Buffer_Overflow__demo_a_01.c
Label Definition File: CWE121_Stack_Based_Buffer_Overflow.label.xml
*/

#include "std_testcase.h"

#ifndef OMITBAD

void CWE121_Stack_Based_Buffer_Overflow__demo_a_01_bad()
{
    char data[10];
    /* FLAW: copies 16 bytes into a 10 byte buffer */
    memcpy(data, "0123456789abcdef", 16);
    printLine(data);
}

#endif /* OMITBAD */

#ifndef OMITGOOD

/* goodG2B uses a large enough buffer */
static void goodG2B()
{
    char data[17];
    memcpy(data, "0123456789abcdef", 17);
    printLine(data);
}

void CWE121_Stack_Based_Buffer_Overflow__demo_a_01_good()
{
    goodG2B();
}

#endif /* OMITGOOD */

#ifdef INCLUDEMAIN

int main(int argc, char * argv[])
{
    srand( (unsigned)time(NULL) );
    CWE121_Stack_Based_Buffer_Overflow__demo_a_01_good();
    CWE121_Stack_Based_Buffer_Overflow__demo_a_01_bad();
    return 0;
}

#endif
