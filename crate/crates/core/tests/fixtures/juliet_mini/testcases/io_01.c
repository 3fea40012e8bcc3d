void io_helper(void)
{
}
