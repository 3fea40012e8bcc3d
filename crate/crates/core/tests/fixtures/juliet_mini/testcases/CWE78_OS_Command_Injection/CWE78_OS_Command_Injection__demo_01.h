void CWE78_OS_Command_Injection__demo_01_bad();
